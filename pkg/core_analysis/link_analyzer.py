"""
Link Analyzer for the report browser
Summarises run tables into KPI dictionaries and builds the plotly figures the pages show
"""

import numpy as np
import pandas as pd
import plotly.express as px
import plotly.graph_objects as go

TARGET_BER = 1e-9
RESIDUAL_WINDOW = (-4.0, 0.6)


def _style(fig, x_title, y_title, height=380):
    """Shared plotly layout for every dashboard chart"""
    fig.update_layout(
        height=height,
        margin=dict(l=10, r=10, t=30, b=10),
        xaxis_title=x_title,
        yaxis_title=y_title,
        hovermode='x unified',
        plot_bgcolor='rgba(0,0,0,0)',
        paper_bgcolor='rgba(0,0,0,0)'
    )
    fig.update_xaxes(showgrid=False)
    fig.update_yaxes(showgrid=True, gridcolor='rgba(0,0,0,0.05)')
    return fig


class LinkAnalyzer:
    """
    Turns simulator output tables into link health summaries and charts
    """

    def analyze_channels(self, metrics_df):
        empty = {'total_channels': 0, 'aligned_channels': 0, 'passing_channels': 0, 'worst_q_db': np.nan,
                 'worst_ber': np.nan, 'worst_channel': None, 'mean_rx_power_dbm': np.nan, 'failing': []}
        if metrics_df.empty or 'q_db' not in metrics_df.columns:
            return empty

        aligned = metrics_df[metrics_df['aligned']] if 'aligned' in metrics_df.columns else metrics_df
        passing = aligned[aligned['ber_estimated'] < TARGET_BER]
        failing = sorted(set(metrics_df['channel_index']) - set(passing['channel_index']))
        if aligned.empty:
            return {**empty, 'total_channels': len(metrics_df), 'failing': failing}

        worst = aligned.loc[aligned['q_db'].idxmin()]
        return {
            'total_channels': len(metrics_df),
            'aligned_channels': len(aligned),
            'passing_channels': len(passing),
            'worst_q_db': float(worst['q_db']),
            'worst_ber': float(aligned['ber_estimated'].max()),
            'worst_channel': int(worst['channel_index']),
            'mean_rx_power_dbm': float(aligned['rx_power_dbm'].mean()),
            'failing': failing
        }

    def analyze_link(self, dispersion_df, power_df=None, residual_df=None):
        result = {'link_length_km': 0.0, 'final_dispersion_ps_nm': np.nan, 'peak_dispersion_ps_nm': np.nan,
                  'min_power_dbm': np.nan, 'residual_in_window': None}
        if not dispersion_df.empty:
            result['link_length_km'] = float(dispersion_df['distance_km'].max())
            result['final_dispersion_ps_nm'] = float(dispersion_df['cumulative_dispersion_ps_nm'].iloc[-1])
            result['peak_dispersion_ps_nm'] = float(dispersion_df['cumulative_dispersion_ps_nm'].abs().max())
        if power_df is not None and not power_df.empty:
            result['min_power_dbm'] = float(power_df['total_power_dbm'].min())
        if residual_df is not None and not residual_df.empty:
            final = residual_df['final_dispersion_ps_nm']
            low, high = RESIDUAL_WINDOW
            result['residual_in_window'] = bool(((final >= low) & (final <= high)).all())
        return result

    def analyze_sweep(self, sweep_df):
        """
        Locate the best sweep value and classify the curve

        Returns:
            Dictionary with the swept parameter, best value, best worst-channel Q and shape:
            'interior optimum', 'improves with value' or 'degrades with value'
        """
        if sweep_df.empty or 'worst_q_db' not in sweep_df.columns:
            return {'param': None, 'best_value': None, 'best_q_db': np.nan, 'shape': None}

        param = sweep_df.columns[0]
        ordered = sweep_df.sort_values(param).reset_index(drop=True)
        scored = ordered.dropna(subset=['worst_q_db'])
        if scored.empty:
            return {'param': param, 'best_value': None, 'best_q_db': np.nan, 'shape': None}

        best = scored['worst_q_db'].idxmax()
        if 0 < best < len(ordered) - 1:
            shape = 'interior optimum'
        elif best == len(ordered) - 1:
            shape = 'improves with value'
        else:
            shape = 'degrades with value'
        return {
            'param': param,
            'best_value': float(ordered.loc[best, param]),
            'best_q_db': float(ordered.loc[best, 'worst_q_db']),
            'shape': shape
        }

    def run_all_analyses(self, data_dict):
        return {
            'channels': self.analyze_channels(data_dict.get('metrics', pd.DataFrame())),
            'link': self.analyze_link(
                data_dict.get('dispersion_map', pd.DataFrame()),
                data_dict.get('power_map', pd.DataFrame()),
                data_dict.get('residual_dispersion', pd.DataFrame())
            ),
            'sweep': self.analyze_sweep(data_dict.get('sweep', pd.DataFrame()))
        }

    # ==================== FIGURES ====================

    def q_figure(self, metrics_df):
        fig = px.bar(metrics_df, x='wavelength_nm', y='q_db', color='aligned',
                     color_discrete_map={True: '#2563eb', False: '#ef4444'}, template='plotly_white')
        # Q = 6 is BER 1e-9
        fig.add_hline(y=20 * np.log10(6.0), line_dash='dash', line_color='red', opacity=0.4,
                      annotation_text='BER 1e-9')
        return _style(fig, 'Wavelength (nm)', 'Q (dB)')

    def dispersion_figure(self, dispersion_df):
        fig = px.line(dispersion_df, x='distance_km', y='cumulative_dispersion_ps_nm',
                      color_discrete_sequence=['#7c3aed'], template='plotly_white')
        return _style(fig, 'Distance (km)', 'Cumulative dispersion (ps/nm)')

    def power_figure(self, power_df):
        long = power_df.melt(id_vars=['distance_km'], value_vars=['total_power_dbm', 'per_channel_power_dbm'],
                             var_name='trace', value_name='power_dbm')
        fig = px.line(long, x='distance_km', y='power_dbm', color='trace', template='plotly_white',
                      color_discrete_sequence=['#059669', '#f59e0b'])
        return _style(fig, 'Distance (km)', 'Power (dBm)')

    def spectrum_figure(self, tx_df, rx_df):
        fig = go.Figure()
        if not tx_df.empty:
            fig.add_trace(go.Scatter(x=tx_df['frequency_thz'], y=tx_df['psd_dbm_per_ghz'],
                                     name='Transmitted', line=dict(color='#94a3b8')))
        if not rx_df.empty:
            fig.add_trace(go.Scatter(x=rx_df['frequency_thz'], y=rx_df['psd_dbm_per_ghz'],
                                     name='Received', line=dict(color='#2563eb')))
        fig.update_layout(template='plotly_white')
        return _style(fig, 'Frequency (THz)', 'PSD (dBm/GHz)', height=420)

    def eye_figure(self, eye_df):
        grid = eye_df.pivot(index='current_a', columns='time_ui', values='count')
        fig = go.Figure(go.Heatmap(x=grid.columns, y=grid.index * 1e3, z=np.log1p(grid.values),
                                   colorscale='Viridis', showscale=False))
        fig.update_layout(template='plotly_white')
        return _style(fig, 'Time (UI)', 'Current (mA)', height=420)

    def sweep_figure(self, sweep_df):
        param = sweep_df.columns[0]
        fig = px.line(sweep_df, x=param, y='worst_ber_estimated', markers=True, log_y=True,
                      color_discrete_sequence=['#dc2626'], template='plotly_white')
        fig.add_hline(y=TARGET_BER, line_dash='dash', line_color='gray', opacity=0.5)
        return _style(fig, param, 'Worst-channel BER (estimated)')
