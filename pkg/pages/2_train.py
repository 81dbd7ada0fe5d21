import dataclasses
import tempfile
import zipfile
from pathlib import Path

import plotly.express as px
import streamlit as st

from mmdemosaick.cfa_ops import PATTERN_KINDS
from mmdemosaick.dataset import ImageDataset, synthetic_dataset
from mmdemosaick.errors import MMDemosaickError
from mmdemosaick.model_io import load_denoiser, save_model
from mmdemosaick.noise_sim import NoiseSpec
from mmdemosaick.training import TrainConfig, run_phase
from mmdemosaick.ui import card, format_db, header, section, setup_page

setup_page("Train", "🏋️")
header("Train", "Pretrain a denoiser or train a full cascade on the CPU")

card("info", """
    <p><strong>Step 1:</strong> pretrain the denoiser on noisy patches (mean squared error).
    <strong>Step 2:</strong> upload that denoiser and train the whole cascade on mosaicked patches
    (mean absolute error, backpropagation through every step).</p>
    <p>Upload a ZIP of clean images, or use generated scenes. The last 20% of images by file name are
    held out for validation and the best-validation parameters are kept.</p>
""")


def load_zip(uploaded):
    with tempfile.TemporaryDirectory() as tmp:
        with zipfile.ZipFile(uploaded, "r") as zip_ref:
            zip_ref.extractall(tmp)
        # images may sit in a single top-level folder
        dirs = [p for p in Path(tmp).rglob("*") if p.is_dir()] + [Path(tmp)]
        datasets = [ImageDataset.from_directory(d) for d in dirs]
        return max(datasets, key=len)


section("📁 Training data")
source = st.radio("Images", ["Generated scenes", "Upload ZIP"], horizontal=True)
if source == "Upload ZIP":
    data_zip = st.file_uploader("ZIP of clean images (PNG / PPM)", type="zip")
    count = None
else:
    data_zip = None
    count = st.number_input("Number of generated scenes", min_value=2, value=60, step=10)

section("⚙️ Settings")
phase = st.selectbox("Phase", ["pretrain", "joint"])
col1, col2, col3 = st.columns(3)
with col1:
    depth = st.number_input("Residual blocks D", min_value=1, value=1)
    filters = st.number_input("Filters", min_value=1, value=8)
    patch_size = st.number_input("Patch size", min_value=8, value=32)
with col2:
    epochs = st.number_input("Epochs", min_value=0, value=5)
    steps = st.number_input("Steps per epoch", min_value=1, value=20)
    lr = st.number_input("Learning rate", min_value=1e-6, value=1e-2, format="%.5f")
with col3:
    seed = st.number_input("Seed", min_value=0, value=0)
    if phase == "joint":
        K = st.number_input("Cascade steps K", min_value=1, value=5)
        pattern = st.selectbox("CFA pattern", PATTERN_KINDS)
        noise_sigma = st.slider("Mosaic noise σ", 0.0, 20.0, 0.0, 0.5)
        init_file = st.file_uploader("Pretrained denoiser", type=None)

if st.button("Start training"):
    try:
        dataset = load_zip(data_zip) if data_zip else synthetic_dataset(int(count or 60), seed=int(seed))
        cfg = TrainConfig(phase=phase, depth=int(depth), filters=int(filters), patch_size=int(patch_size),
                          epochs=int(epochs), steps_per_epoch=int(steps), lr=float(lr), seed=int(seed))
        init = None
        if phase == "joint":
            cfg = dataclasses.replace(cfg, K=int(K), pattern=pattern, noise=NoiseSpec(sigma=noise_sigma))
            if not init_file:
                raise MMDemosaickError("joint training needs a pretrained denoiser file")
            with tempfile.NamedTemporaryFile(suffix=".rdnc") as tmp:
                tmp.write(init_file.getvalue())
                tmp.flush()
                init = load_denoiser(tmp.name)

        progress_bar = st.progress(0)
        chart = st.empty()
        rows = []
        total_steps = max(cfg.epochs * cfg.steps_per_epoch, 1)

        def on_row(row):
            rows.append(row)
            progress_bar.progress(min(row["step"] / total_steps, 1.0))
            fig = px.line(x=[r["step"] for r in rows], y=[r["loss"] for r in rows],
                          title="Training loss", labels={"x": "Step", "y": "Loss"})
            fig.update_layout(height=350)
            chart.plotly_chart(fig, use_container_width=True)

        with st.spinner("Training..."):
            result = run_phase(dataset, cfg, init=init, callback=on_row)

        card("success", f"<strong>Done.</strong> Best validation PSNR {format_db(result.best_val_psnr)}")
        with st.expander("📊 Training log"):
            st.dataframe(result.history, use_container_width=True, hide_index=True)

        section("📥 Download Results")
        with tempfile.NamedTemporaryFile(suffix=".rdnc") as tmp:
            save_model(result.params, tmp.name)
            model_bytes = Path(tmp.name).read_bytes()
        st.download_button("Download model", model_bytes, file_name=f"{phase}.rdnc",
                           mime="application/octet-stream")
        st.download_button("Download training log as CSV", result.history.to_csv(index=False),
                           file_name=f"{phase}_log.csv", mime="text/csv")
    except MMDemosaickError as e:
        card("error", f"Training failed: {e}")
