import tempfile
import zipfile
from pathlib import Path

import plotly.express as px
import streamlit as st

from mmdemosaick.errors import MMDemosaickError
from mmdemosaick.evaluation import METHODS, evaluate_directory
from mmdemosaick.mm_cascade import CascadeParams
from mmdemosaick.model_io import load_model
from mmdemosaick.ui import card, format_db, header, metric, section, setup_page

setup_page("Evaluate", "📐")
header("Evaluate", "PSNR of reconstructions against ground truth")

card("info", """
    <p>Zip a folder of pairs that share a file name: <code>scene.npz</code> (the observation written by
    <code>mmdemosaick mosaic</code> or <code>mmdemosaick synth --observations</code>) and
    <code>scene.ppm</code> or <code>scene.png</code> (the ground truth).</p>
    <p>PSNR is reported on the linear images and after the sRGB transfer curve.</p>
""")


def find_pair_dir(root):
    for d in [root, *sorted(p for p in root.rglob("*") if p.is_dir())]:
        if any(d.glob("*.npz")):
            return d
    raise MMDemosaickError("no .npz observations found in the ZIP file")


section("📁 Upload")
pairs_zip = st.file_uploader("ZIP of (truth, observation) pairs", type="zip")
method = st.selectbox("Method", METHODS)
model_file = st.file_uploader("Cascade model", type=None) if method == "cascade" else None
threads = st.number_input("Threads", min_value=1, value=1)

if pairs_zip and st.button("Evaluate"):
    try:
        model = None
        if method == "cascade":
            if not model_file:
                raise MMDemosaickError("the cascade method needs a model file")
            with tempfile.NamedTemporaryFile(suffix=".rdnc") as tmp:
                tmp.write(model_file.getvalue())
                tmp.flush()
                model = load_model(tmp.name)
            if not isinstance(model, CascadeParams):
                raise MMDemosaickError("this model file holds a denoiser only")

        with tempfile.TemporaryDirectory() as tmp:
            with zipfile.ZipFile(pairs_zip, "r") as zip_ref:
                zip_ref.extractall(tmp)
            with st.spinner("Reconstructing..."):
                report = evaluate_directory(find_pair_dir(Path(tmp)), method=method, model=model,
                                            threads=int(threads))

        section("📊 Results")
        col1, col2, col3 = st.columns(3)
        with col1:
            metric("Mean linRGB PSNR", format_db(report.mean_psnr_lin))
        with col2:
            metric("Mean sRGB PSNR", format_db(report.mean_psnr_srgb))
        with col3:
            metric("Images", len(report.per_image))

        fig = px.bar(report.per_image, x="image", y=["psnr_lin", "psnr_srgb"], barmode="group",
                     title="PSNR per image", labels={"value": "PSNR (dB)", "variable": ""},
                     template="plotly_white")
        fig.update_layout(height=400)
        st.plotly_chart(fig, use_container_width=True)
        st.dataframe(report.table(), use_container_width=True, hide_index=True)
        if report.breakdown is not None:
            with st.expander("Parameter breakdown"):
                st.dataframe(report.breakdown, use_container_width=True, hide_index=True)

        st.download_button(
            label="📥 Download report as CSV",
            data=report.table().to_csv(index=False),
            file_name=f"eval_{method}.csv",
            mime="text/csv",
        )
    except MMDemosaickError as e:
        card("error", f"Evaluation failed: {e}")
