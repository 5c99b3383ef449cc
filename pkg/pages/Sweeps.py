"""
Parameter sweeps: worst-channel BER against the swept value
"""

import plotly.express as px
import streamlit as st

from core_analysis.data_retriever import RunDataRetriever
from core_analysis.link_analyzer import LinkAnalyzer, _style
from core_analysis.theme import apply_theme, create_kpi_card, select_run

apply_theme("Sweeps", "📈")

if 'retriever' not in st.session_state:
    st.session_state.retriever = RunDataRetriever()
if 'analyzer' not in st.session_state:
    st.session_state.analyzer = LinkAnalyzer()

st.title("📈 Parameter Sweeps")

run = select_run(st.session_state.retriever, key="sweep_run")
if run is None:
    st.stop()

try:
    sweep = st.session_state.retriever.get_sweep(run)
except Exception as e:
    st.error(f"Error loading sweep: {str(e)}")
    st.stop()

summary = sweep['summary']
if summary.empty:
    st.info("This run is not a sweep")
    st.stop()

analysis = st.session_state.analyzer.analyze_sweep(summary)
kpi_cols = st.columns(3)
with kpi_cols[0]:
    st.metric("Best value", f"{analysis['best_value']:g}" if analysis['best_value'] is not None else "—")
with kpi_cols[1]:
    create_kpi_card("Best worst-channel Q", analysis['best_q_db'], "db")
with kpi_cols[2]:
    st.metric("Curve", analysis['shape'] or "—")

st.plotly_chart(st.session_state.analyzer.sweep_figure(summary), use_container_width=True)

channels = sweep['channels']
if not channels.empty:
    param = analysis['param']
    st.markdown("#### Per-channel Q")
    fig = px.line(channels, x=param, y='q_db', color='channel_index', markers=True, template='plotly_white')
    st.plotly_chart(_style(fig, param, 'Q (dB)'), use_container_width=True)
    st.dataframe(summary, use_container_width=True, hide_index=True)
