"""
DWDM Link Simulator - Report Browser Home Page
Overview of one finished run: channel health KPIs, Q and received power per channel
"""

import streamlit as st
import plotly.express as px

from core_analysis.data_retriever import RunDataRetriever
from core_analysis.link_analyzer import LinkAnalyzer, TARGET_BER, _style
from core_analysis.theme import apply_theme, create_kpi_card, select_run

apply_theme("DWDM Link Reports", "📡")

# Initialize session state
if 'retriever' not in st.session_state:
    st.session_state.retriever = RunDataRetriever()
if 'analyzer' not in st.session_state:
    st.session_state.analyzer = LinkAnalyzer()
if 'home_data' not in st.session_state:
    st.session_state.home_data = None

st.title("📡 DWDM Link Report")
st.markdown("##### Finished simulator runs: channel quality, dispersion and power along the link")

run = select_run(st.session_state.retriever, key="home_run")

with st.sidebar:
    if st.button("🔄 Load Run", use_container_width=True, type="primary", disabled=run is None):
        with st.spinner("Reading run directory..."):
            try:
                data_dict = st.session_state.retriever.get_all_data(run)
                results = st.session_state.analyzer.run_all_analyses(data_dict)
                st.session_state.home_data = {'run': run, 'data_dict': data_dict, 'results': results}
                st.success("✅ Run loaded")
                st.rerun()
            except Exception as e:
                st.error(f"Error loading run: {str(e)}")

    st.markdown("---")
    st.markdown("### 🧭 Pages")
    st.markdown("- 🗺️ **Dispersion Map** - dispersion and power along the link")
    st.markdown("- 🌈 **Spectra** - transmitted and received spectrum")
    st.markdown("- 👁️ **Eye Diagrams** - per-channel eyes")
    st.markdown("- 📈 **Sweeps** - BER against a swept parameter")

home = st.session_state.home_data
if home and home['run'] == run:
    data_dict = home['data_dict']
    results = home['results']
    channels = results['channels']
    info = data_dict['run_info']

    st.markdown(f"### 📈 {info.get('scenario', run)}")
    kpi_cols = st.columns(4)
    with kpi_cols[0]:
        create_kpi_card(f"Channels at BER < {TARGET_BER:g}", channels['passing_channels'])
    with kpi_cols[1]:
        create_kpi_card("Worst Q", channels['worst_q_db'], "db")
    with kpi_cols[2]:
        create_kpi_card("Worst BER", channels['worst_ber'], "ber")
    with kpi_cols[3]:
        create_kpi_card("Link length", info.get('link_length_km', results['link']['link_length_km']), "km")

    st.markdown("---")
    metrics_df = data_dict['metrics']
    if metrics_df.empty:
        st.info("This run has no per-channel metrics (dispersion map or sweep only)")
    else:
        col1, col2 = st.columns(2)
        with col1:
            st.markdown("#### 🎯 Q per channel")
            st.plotly_chart(st.session_state.analyzer.q_figure(metrics_df), use_container_width=True)
        with col2:
            st.markdown("#### 🔦 Received power per channel")
            fig = px.bar(metrics_df, x='wavelength_nm', y='rx_power_dbm',
                         color_discrete_sequence=['#059669'], template='plotly_white')
            st.plotly_chart(_style(fig, 'Wavelength (nm)', 'Received power (dBm)'), use_container_width=True)

        st.markdown("### 📋 Channel table")
        st.dataframe(metrics_df, use_container_width=True, hide_index=True)

        if channels['failing']:
            st.warning(f"**Channels above BER {TARGET_BER:g}:** {', '.join(map(str, channels['failing']))}")
        else:
            st.success(f"**All {channels['total_channels']} channels** meet BER < {TARGET_BER:g}")

    st.caption(f"seed {info.get('master_seed')} · config {str(info.get('config_hash', ''))[:12]} · "
               f"wall time {info.get('wall_time_s', 0):.1f} s")

else:
    col1, col2, col3 = st.columns([1, 2, 1])
    with col2:
        st.markdown("""
        Get Started

        1. **Run a scenario**: `python simulate.py run scenarios/desk-8ch.cfg`
        2. **Pick the run directory** in the sidebar
        3. **Click 'Load Run'** and explore the pages

        Results are read from `LINKSIM_RESULTS_DIR` (default `runs/`).
        """)

st.markdown("---")
st.caption("DWDM link simulator · report browser")
