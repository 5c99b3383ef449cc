"""
Transmitted and received optical spectra
"""

import streamlit as st

from core_analysis.data_retriever import RunDataRetriever
from core_analysis.link_analyzer import LinkAnalyzer
from core_analysis.theme import apply_theme, select_run

apply_theme("Spectra", "🌈")

if 'retriever' not in st.session_state:
    st.session_state.retriever = RunDataRetriever()
if 'analyzer' not in st.session_state:
    st.session_state.analyzer = LinkAnalyzer()

st.title("🌈 Optical Spectra")

run = select_run(st.session_state.retriever, key="spectra_run")
if run is None:
    st.stop()

try:
    spectra = st.session_state.retriever.get_spectra(run)
except Exception as e:
    st.error(f"Error loading spectra: {str(e)}")
    st.stop()

if spectra['tx'].empty and spectra['rx'].empty:
    st.info("This run has no spectra")
else:
    st.plotly_chart(st.session_state.analyzer.spectrum_figure(spectra['tx'], spectra['rx']),
                    use_container_width=True)
    st.caption("PSD in dBm/GHz against absolute optical frequency")
