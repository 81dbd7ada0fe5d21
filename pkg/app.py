import pandas as pd
import streamlit as st

from mmdemosaick.evaluation import REFERENCE_PARAMETER_COUNT, parameter_breakdown
from mmdemosaick.mm_cascade import init_cascade
from mmdemosaick.resdnet import init_resdnet
from mmdemosaick.ui import card, header, setup_page

setup_page("Home", "🎞️")


@st.cache_data
def full_size_breakdown():
    """Parameter audit of the full-size model (D=5, 64 filters, K=10)."""
    params = init_cascade(init_resdnet(5, 0, 64), 10, 15.0, 1.0)
    return parameter_breakdown(params)


breakdown = full_size_breakdown()
total = int(breakdown.loc[breakdown["group"] == "total", "count"].iloc[0])

# Main layout containers
header_box = st.container()
stats_banner = st.container()
body = st.container()
guide = st.container()

with header_box:
    header("MM Demosaicking Toolkit",
           "Joint demosaicking and denoising with a learned majorisation-minimisation cascade.")

with stats_banner:
    cols = st.columns(3)
    cols[0].metric("Trainable parameters (D=5, K=10)", f"{total:,}")
    cols[1].metric("Reference count", f"{REFERENCE_PARAMETER_COUNT:,}")
    cols[2].metric("Difference", f"{(total - REFERENCE_PARAMETER_COUNT) / REFERENCE_PARAMETER_COUNT:+.3%}")

with body:
    card("info", """
        <p><strong>Welcome!</strong> These tools reconstruct full-colour images from raw colour filter
        array samples (Bayer or X-Trans). Each reconstruction step extrapolates from the two previous
        estimates, puts the measured samples back in place and passes the result through a residual
        denoiser whose noise level decreases from step to step.</p>
        <p>The denoiser is trained first on noisy patches, then the whole cascade (denoiser, extrapolation
        weights and noise schedule) is trained end to end on mosaicked patches.</p>
    """)
    if st.button("Demosaick an image"):
        st.switch_page("pages/1_demosaick.py")
    if st.button("Train a model"):
        st.switch_page("pages/2_train.py")

    card("warning", """
        <strong>⚠️ Desk scale</strong><br>
        Everything runs on the CPU in numpy. Training in the browser is meant for small models and
        patches; use the <code>mmdemosaick</code> command line for longer runs.
    """)

with guide:
    st.markdown('<h2 class="section-header">📋 Site Guide</h2>', unsafe_allow_html=True)
    guide_df = pd.DataFrame({
        "Page Name": ["app", "demosaick", "train", "evaluate"],
        "Description": [
            "Overview and parameter audit.",
            "Mosaic an image, add sensor noise, and compare the bilinear baseline with a trained cascade.",
            "Pretrain a denoiser or train a cascade on uploaded images, with a live loss curve.",
            "Score a zip of (ground truth, observation) pairs and download the PSNR report.",
        ],
    })
    st.dataframe(guide_df, use_container_width=True, hide_index=True)
    with st.expander("Parameter breakdown"):
        st.dataframe(breakdown, use_container_width=True, hide_index=True)
