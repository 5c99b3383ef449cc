"""
Shared look for the report browser pages
"""

import math

import streamlit as st

DASHBOARD_CSS = """
<style>
    .main {
        background-color: #f8fafc;
    }

    div[data-testid="metric-container"] {
        background: #ffffff;
        padding: 20px;
        border-radius: 14px;
        box-shadow: 0 4px 12px rgba(15,23,42,0.08);
    }

    div[data-testid="stMetricValue"] {
        font-size: 32px;
        font-weight: 800;
        color: #1d4ed8;
    }

    div[data-testid="stMetricLabel"] {
        font-size: 13px;
        font-weight: 600;
        color: #64748b;
        text-transform: uppercase;
        letter-spacing: 1px;
    }

    h1 {
        color: #0f172a;
        font-weight: 800;
        letter-spacing: -1px;
    }

    section[data-testid="stSidebar"] {
        background: linear-gradient(180deg, #0f172a 0%, #1e3a8a 100%);
    }

    section[data-testid="stSidebar"] h1,
    section[data-testid="stSidebar"] h2,
    section[data-testid="stSidebar"] h3,
    section[data-testid="stSidebar"] label,
    section[data-testid="stSidebar"] p {
        color: #e2e8f0 !important;
    }

    .js-plotly-plot {
        border-radius: 14px;
        background: white;
        padding: 10px;
    }
</style>
"""


def apply_theme(title, icon):
    st.set_page_config(page_title=title, page_icon=icon, layout="wide", initial_sidebar_state="expanded")
    st.markdown(DASHBOARD_CSS, unsafe_allow_html=True)


def create_kpi_card(label, value, format_type="number"):
    """Styled KPI metric card; NaN shows as a dash"""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        st.metric(label, "—")
    elif format_type == "ber":
        st.metric(label, f"{value:.2e}")
    elif format_type == "db":
        st.metric(label, f"{value:.2f} dB")
    elif format_type == "km":
        st.metric(label, f"{value:,.1f} km")
    elif isinstance(value, float):
        st.metric(label, f"{value:,.2f}")
    else:
        st.metric(label, f"{value:,.0f}")


def select_run(retriever, key):
    """Sidebar run picker shared by every page; returns the chosen run or None"""
    runs = retriever.list_runs()
    with st.sidebar:
        st.markdown("## 📁 Run")
        if not runs:
            st.info(f"No runs found under {retriever.results_dir}")
            return None
        default = runs.index(st.session_state.selected_run) if st.session_state.get('selected_run') in runs else 0
        run = st.selectbox("Run directory", runs, index=default, key=key)
        st.session_state.selected_run = run
        return run
