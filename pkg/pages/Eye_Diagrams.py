"""
Per-channel eye diagrams
"""

import streamlit as st

from core_analysis.data_retriever import RunDataRetriever
from core_analysis.link_analyzer import LinkAnalyzer
from core_analysis.theme import apply_theme, create_kpi_card, select_run

apply_theme("Eye Diagrams", "👁️")

if 'retriever' not in st.session_state:
    st.session_state.retriever = RunDataRetriever()
if 'analyzer' not in st.session_state:
    st.session_state.analyzer = LinkAnalyzer()

st.title("👁️ Eye Diagrams")

retriever = st.session_state.retriever
run = select_run(retriever, key="eye_run")
if run is None:
    st.stop()

channels = retriever.list_eye_channels(run)
if not channels:
    st.info("This run has no eye diagrams")
    st.stop()

metrics_df = retriever.get_metrics(run)
selected = st.multiselect("Channels", channels, default=[channels[0], channels[-1]] if len(channels) > 1 else channels)

cols = st.columns(2)
for i, channel in enumerate(selected):
    with cols[i % 2]:
        st.markdown(f"#### Channel {channel}")
        row = metrics_df[metrics_df['channel_index'] == channel] if not metrics_df.empty else metrics_df
        if not row.empty:
            create_kpi_card("Eye opening (µA)", float(row['eye_opening'].iloc[0]) * 1e6)
        eye_df = retriever.get_eye(run, channel)
        if eye_df.empty:
            st.info("No histogram for this channel")
        else:
            st.plotly_chart(st.session_state.analyzer.eye_figure(eye_df), use_container_width=True)
