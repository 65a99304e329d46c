"""
Output Service
==============

Purpose: Write run results to disk.

Handles:
- CSV tables (profiles, events, gate flux, mass, analysis rows)
- SVG space-time diagram of the front paths
- plain-text summaries and wave records

Same inputs give byte-identical files: floats are written with 17 significant
digits and the SVG carries no date and a fixed id salt.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from phase_traffic.analysis.harness import SuiteResult  # noqa: E402
from phase_traffic.pipeline.front_tracking import SimTrace  # noqa: E402
from phase_traffic.pipeline.wavefan import WaveKind  # noqa: E402

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
PROFILE_COLUMNS = ["t", "x", "rho", "q", "v", "w"]
EVENT_COLUMNS = ["t", "x", "in_ids", "out_ids", "kind"]

KIND_COLORS = {
    WaveKind.CONTACT: "tab:blue",
    WaveKind.SHOCK1: "tab:red",
    WaveKind.RAREFACTION1: "tab:gray",
    WaveKind.PHASE_TRANSITION: "black",
    WaveKind.STATIONARY_JUMP: "tab:green",
}


class OutputService:
    """
    Service for writing result files.
    """

    @staticmethod
    def ensure_dir(path: Path) -> Path:
        path.mkdir(parents=True, exist_ok=True)
        return path

    @staticmethod
    def write_table(rows: List[Dict[str, Any]], path: Path, columns: Optional[List[str]] = None) -> Path:
        """
        Write rows as CSV.

        Args:
            rows: One dict per row
            path: Target file
            columns: Column order; missing columns are left empty

        Returns:
            The written path
        """
        df = pd.DataFrame(rows, columns=columns)
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        logger.info(f"✅ Wrote {len(df)} rows to {path}")
        return path

    def write_profiles(self, trace: SimTrace, path: Path) -> Path:
        return self.write_table(trace.profiles, path, PROFILE_COLUMNS)

    def write_events(self, trace: SimTrace, path: Path) -> Path:
        """Event log; ids joined with ';', kind suffixed with its macro label."""
        rows = [{
            "t": e.t,
            "x": e.x,
            "in_ids": ";".join(str(i) for i in e.in_ids),
            "out_ids": ";".join(str(i) for i in e.out_ids),
            "kind": f"{e.kind}|{e.label}" if e.label else e.kind,
        } for e in trace.events]
        return self.write_table(rows, path, EVENT_COLUMNS)

    def write_gate_flux(self, trace: SimTrace, path: Path) -> Path:
        return self.write_table(trace.gate_flux, path, ["t", "f_minus", "f_plus"])

    def write_mass(self, trace: SimTrace, path: Path) -> Path:
        return self.write_table(trace.mass, path, ["t", "mass", "outflow", "balance"])

    def write_analysis(self, results: List[SuiteResult], path: Path) -> Path:
        rows = [{"suite": r.name, **row} for r in results for row in r.rows]
        return self.write_table(rows, path)

    @staticmethod
    def write_diagram(trace: SimTrace, path: Path, title: str = "") -> Path:
        """Space-time diagram: one segment per front, x horizontal, t vertical."""
        plt.rcParams["svg.hashsalt"] = "phase-traffic"
        fig, ax = plt.subplots(figsize=(8, 6))
        try:
            for fp in trace.paths:
                ax.plot([fp.x_start, fp.x_stop], [fp.t_start, fp.t_stop],
                        color=KIND_COLORS.get(fp.kind, "tab:gray"),
                        linewidth=1.2 if fp.kind is not WaveKind.RAREFACTION1 else 0.4)
            for e in trace.events:
                if e.label:
                    ax.annotate(e.label, (e.x, e.t), fontsize=8)
            ax.axvline(0.0, color="tab:green", linestyle=":", linewidth=0.8)
            ax.set_xlabel("x")
            ax.set_ylabel("t")
            if title:
                ax.set_title(title)
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
        logger.info(f"✅ Wrote diagram to {path}")
        return path

    @staticmethod
    def write_text(text: str, path: Path) -> Path:
        path.write_text(text, encoding="utf-8")
        logger.info(f"✅ Wrote {path}")
        return path


# Global instance
output_service = OutputService()
