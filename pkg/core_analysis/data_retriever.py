"""
Run Data Retriever for the link-simulation report browser
Loads finished run directories (CSV tables + run_info.json) into analysis-ready DataFrames
"""

import json
from pathlib import Path

import pandas as pd
import structlog

from config import settings

logger = structlog.get_logger(__name__)

RUN_MARKERS = ('metrics.csv', 'sweep.csv', 'dispersion_map.csv')


class RunDataRetriever:
    """
    Centralized access to simulator output directories
    Every getter returns an empty DataFrame when its file is missing or unreadable
    """

    def __init__(self, results_dir=None):
        """Use the given results root, falling back to LINKSIM_RESULTS_DIR"""
        self.results_dir = Path(results_dir) if results_dir is not None else settings.RESULTS_DIR

    def list_runs(self):
        """
        Find run directories below the results root

        Returns:
            Sorted list of run directory names (relative to the results root)
        """
        if not self.results_dir.is_dir():
            return []
        runs = set()
        for marker in RUN_MARKERS:
            for path in self.results_dir.rglob(marker):
                runs.add(path.parent.relative_to(self.results_dir).as_posix())
        return sorted(runs)

    def _run_path(self, run):
        return self.results_dir / run

    def _read_csv(self, run, filename):
        """
        Read one CSV of a run

        Args:
            run: Run directory name
            filename: CSV file inside the run directory

        Returns:
            DataFrame, empty when the file is absent or malformed
        """
        path = self._run_path(run) / filename
        if not path.exists():
            return pd.DataFrame()
        try:
            return pd.read_csv(path)
        except (OSError, ValueError, pd.errors.ParserError) as e:
            logger.warning("csv_unreadable", path=str(path), error=str(e))
            return pd.DataFrame()

    def _safe_numeric_conversion(self, df, columns):
        """
        Convert columns to float, turning unparsable cells into NaN

        Args:
            df: DataFrame to process
            columns: List of column names to convert

        Returns:
            DataFrame with converted numeric columns
        """
        for col in columns:
            if col in df.columns:
                df[col] = pd.to_numeric(df[col], errors='coerce')
        return df

    def get_metrics(self, run):
        """Per-channel Q, BER, eye opening and received power"""
        df = self._read_csv(run, 'metrics.csv')
        if df.empty:
            return df
        df = self._safe_numeric_conversion(
            df, ['wavelength_nm', 'rx_power_dbm', 'q_db', 'ber_estimated', 'ber_counted', 'eye_opening']
        )
        if 'aligned' in df.columns:
            df['aligned'] = df['aligned'].astype(str).str.lower() == 'true'
        return df

    def get_dispersion_map(self, run):
        df = self._read_csv(run, 'dispersion_map.csv')
        return self._safe_numeric_conversion(df, ['distance_km', 'cumulative_dispersion_ps_nm', 'link_dispersion_ps_nm'])

    def get_residual_dispersion(self, run):
        df = self._read_csv(run, 'residual_dispersion.csv')
        return self._safe_numeric_conversion(
            df, ['wavelength_nm', 'link_dispersion_ps_nm', 'pre_dcm_ps_nm', 'final_dispersion_ps_nm']
        )

    def get_power_map(self, run):
        df = self._read_csv(run, 'power_map.csv')
        return self._safe_numeric_conversion(df, ['distance_km', 'total_power_dbm', 'per_channel_power_dbm'])

    def get_spectra(self, run):
        """
        Transmitted and received spectra

        Returns:
            Dictionary with 'tx' and 'rx' DataFrames (frequency_thz, psd_dbm_per_ghz)
        """
        return {
            'tx': self._read_csv(run, 'spectrum_tx.csv'),
            'rx': self._read_csv(run, 'spectrum.csv'),
        }

    def list_eye_channels(self, run):
        run_path = self._run_path(run)
        if not run_path.is_dir():
            return []
        return sorted(int(p.stem.replace('eye_ch', '')) for p in run_path.glob('eye_ch*.csv'))

    def get_eye(self, run, channel):
        """Eye histogram of one channel in long form (time_ui, current_a, count)"""
        return self._read_csv(run, f'eye_ch{channel:02d}.csv')

    def get_sweep(self, run):
        """
        Sweep summary and per-channel table

        Returns:
            Dictionary with 'summary' and 'channels' DataFrames
        """
        return {
            'summary': self._read_csv(run, 'sweep.csv'),
            'channels': self._read_csv(run, 'sweep_channels.csv'),
        }

    def get_run_info(self, run):
        path = self._run_path(run) / 'run_info.json'
        if not path.exists():
            return {}
        try:
            return json.loads(path.read_text(encoding='utf-8'))
        except (OSError, ValueError) as e:
            logger.warning("run_info_unreadable", path=str(path), error=str(e))
            return {}

    def get_all_data(self, run):
        """
        Retrieve every table of one run

        Args:
            run: Run directory name

        Returns:
            Dictionary containing all DataFrames plus the run_info dict
        """
        spectra = self.get_spectra(run)
        sweep = self.get_sweep(run)
        return {
            'metrics': self.get_metrics(run),
            'dispersion_map': self.get_dispersion_map(run),
            'residual_dispersion': self.get_residual_dispersion(run),
            'power_map': self.get_power_map(run),
            'spectrum_tx': spectra['tx'],
            'spectrum_rx': spectra['rx'],
            'sweep': sweep['summary'],
            'sweep_channels': sweep['channels'],
            'run_info': self.get_run_info(run),
        }
