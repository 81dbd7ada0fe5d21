import tempfile

import numpy as np
import streamlit as st

from mmdemosaick.cfa_ops import PATTERN_KINDS, bilinear_demosaick, make_pattern, mosaic
from mmdemosaick.errors import MMDemosaickError
from mmdemosaick.image_io import decode_image
from mmdemosaick.metrics import linrgb_to_srgb, psnr
from mmdemosaick.mm_cascade import CascadeParams, demosaick_forward
from mmdemosaick.model_io import load_model
from mmdemosaick.noise_sim import NOISE_KINDS, NoiseSpec, add_noise
from mmdemosaick.ui import card, format_db, header, png_bytes, section, setup_page, to_display

setup_page("Demosaick", "🧩")
header("Demosaick", "Mosaic an image, add sensor noise and reconstruct it")

card("info", """
    <p>Upload a clean RGB image (PNG or binary PPM). It is sampled with the chosen colour filter
    array, optionally corrupted with sensor noise, then reconstructed by bilinear interpolation and,
    if you upload a trained cascade model, by the learned cascade.</p>
""")


section("📁 Inputs")
col1, col2 = st.columns(2)
with col1:
    image_file = st.file_uploader("Clean image", type=["png", "ppm", "pgm"])
    model_file = st.file_uploader("Cascade model (optional)", type=None)
with col2:
    pattern_kind = st.selectbox("CFA pattern", PATTERN_KINDS)
    noise_kind = st.selectbox("Noise model", NOISE_KINDS)
    if noise_kind == "iid_gaussian":
        sigma = st.slider("Noise level σ (0-255 scale)", 0.0, 25.0, 0.0, 0.5)
        spec_args = {"sigma": sigma}
    else:
        a_shot = st.number_input("Shot-noise gain a", min_value=0.0, value=0.05)
        b_read = st.number_input("Read-noise variance b", min_value=0.0, value=4.0)
        spec_args = {"a_shot": a_shot, "b_read": b_read}
    seed = st.number_input("Seed", min_value=0, value=0, step=1)

if image_file:
    try:
        clean = decode_image(image_file.getvalue(), image_file.name)
        if clean.shape[2] == 1:
            clean = np.repeat(clean, 3, axis=2)
        clean = clean[:, :, :3]
        spec = NoiseSpec(kind=noise_kind, seed=int(seed), **spec_args)
        y = mosaic(add_noise(clean, spec), make_pattern(pattern_kind), sigma=spec.sigma)

        results = {"bilinear": bilinear_demosaick(y)}
        if model_file:
            with tempfile.NamedTemporaryFile(suffix=".rdnc") as tmp:
                tmp.write(model_file.getvalue())
                tmp.flush()
                params = load_model(tmp.name)
            if isinstance(params, CascadeParams):
                with st.spinner("Running the cascade..."):
                    results["cascade"], _ = demosaick_forward(y, params)
            else:
                card("warning", "This model file holds a denoiser only; train a cascade to demosaick.")

        section("📊 Results")
        cols = st.columns(len(results) + 1)
        cols[0].image(to_display(y.data), caption="Observation", use_container_width=True)
        for col, (name, out) in zip(cols[1:], results.items()):
            col.image(to_display(out), caption=name, use_container_width=True)
            col.markdown(f"linRGB {format_db(psnr(out, clean))} · "
                         f"sRGB {format_db(psnr(linrgb_to_srgb(out), linrgb_to_srgb(clean)))}")
            col.download_button(f"Download {name} PNG", png_bytes(out), file_name=f"{name}.png",
                                 mime="image/png")
    except MMDemosaickError as e:
        card("error", f"Could not process the image: {e}")
else:
    card("warning", "Upload an image to get started.")
