"""
Dispersion and power along the link
"""

import streamlit as st

from core_analysis.data_retriever import RunDataRetriever
from core_analysis.link_analyzer import LinkAnalyzer, RESIDUAL_WINDOW
from core_analysis.theme import apply_theme, create_kpi_card, select_run

apply_theme("Dispersion Map", "🗺️")

if 'retriever' not in st.session_state:
    st.session_state.retriever = RunDataRetriever()
if 'analyzer' not in st.session_state:
    st.session_state.analyzer = LinkAnalyzer()

st.title("🗺️ Dispersion & Power Map")

run = select_run(st.session_state.retriever, key="map_run")
if run is None:
    st.stop()

retriever = st.session_state.retriever
try:
    dispersion_df = retriever.get_dispersion_map(run)
    power_df = retriever.get_power_map(run)
    residual_df = retriever.get_residual_dispersion(run)
except Exception as e:
    st.error(f"Error loading maps: {str(e)}")
    st.stop()

link = st.session_state.analyzer.analyze_link(dispersion_df, power_df, residual_df)
kpi_cols = st.columns(3)
with kpi_cols[0]:
    create_kpi_card("Link length", link['link_length_km'], "km")
with kpi_cols[1]:
    create_kpi_card("Final dispersion (ps/nm)", link['final_dispersion_ps_nm'])
with kpi_cols[2]:
    create_kpi_card("Lowest total power (dBm)", link['min_power_dbm'])

if dispersion_df.empty:
    st.info("No dispersion map in this run")
else:
    st.markdown("#### 📉 Cumulative dispersion")
    st.plotly_chart(st.session_state.analyzer.dispersion_figure(dispersion_df), use_container_width=True)

if not residual_df.empty:
    low, high = RESIDUAL_WINDOW
    st.markdown("#### 🎯 End-of-link residual per channel")
    st.dataframe(residual_df, use_container_width=True, hide_index=True)
    if link['residual_in_window']:
        st.success(f"All channels end inside [{low}, {high}] ps/nm")
    else:
        st.warning(f"Some channels end outside [{low}, {high}] ps/nm")

if not power_df.empty:
    st.markdown("#### 🔋 Optical power")
    st.plotly_chart(st.session_state.analyzer.power_figure(power_df), use_container_width=True)
