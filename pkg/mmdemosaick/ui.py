"""Shared Streamlit styling and small widgets for app.py and the pages."""
import numpy as np
import streamlit as st

from .image_io import encode_image

CSS = """
<style>
    .main-header {
        background: #111827;
        border-bottom: 4px solid #0f766e;
        border-radius: 6px;
        color: #f9fafb;
        padding: 1.2rem 1.6rem;
        margin-bottom: 1.5rem;
    }
    .main-header h1 { margin: 0; font-size: 2rem; letter-spacing: 0.02em; }
    .main-header p { margin: 0.3rem 0 0 0; color: #9ca3af; }

    .section-header {
        color: #0f766e;
        font-size: 1.25rem;
        margin: 1.2rem 0 0.6rem 0;
    }

    .status-card, .info-card {
        border-radius: 6px;
        padding: 0.8rem 1.1rem;
        margin: 0.8rem 0;
        border: 1px solid #e5e7eb;
    }
    .info-card { background: #f0fdfa; border-left: 5px solid #0f766e; }
    .success-card { background: #f0fdf4; border-left: 5px solid #16a34a; }
    .warning-card { background: #fefce8; border-left: 5px solid #ca8a04; }
    .error-card { background: #fef2f2; border-left: 5px solid #dc2626; }

    .metric-card { border: 1px solid #e5e7eb; border-radius: 6px; padding: 0.8rem; text-align: center; }
    .metric-value { font-size: 1.6rem; font-family: monospace; color: #111827; }
    .metric-label { font-size: 0.85rem; color: #6b7280; }

    .stDeployButton {display: none;}
</style>
"""


def setup_page(title, icon):
    st.set_page_config(page_title=title, page_icon=icon, layout="wide", initial_sidebar_state="expanded")
    st.markdown(CSS, unsafe_allow_html=True)


def header(title, subtitle):
    st.markdown(f'<div class="main-header"><h1>{title}</h1><p>{subtitle}</p></div>', unsafe_allow_html=True)


def section(title):
    st.markdown(f'<h3 class="section-header">{title}</h3>', unsafe_allow_html=True)


def card(kind, html):
    """kind is one of info, success, warning, error."""
    css = "info-card" if kind == "info" else f"status-card {kind}-card"
    st.markdown(f'<div class="{css}">{html}</div>', unsafe_allow_html=True)


def metric(label, value):
    st.markdown(f'<div class="metric-card"><div class="metric-value">{value}</div>'
                f'<div class="metric-label">{label}</div></div>', unsafe_allow_html=True)


def format_db(value):
    return "∞ dB" if np.isinf(value) else f"{value:.2f} dB"


def to_display(image):
    """[0, 255] float image -> [0, 1] array for st.image."""
    img = np.clip(np.asarray(image, dtype=np.float64), 0, 255) / 255.0
    return img[:, :, 0] if img.shape[2] == 1 else img


def png_bytes(image):
    return encode_image(image, ".png")
