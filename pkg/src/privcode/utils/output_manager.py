"""
Output manager for privcode.

Figure CSVs and timing reports land under one base directory:

    privcode_output/
        figures/   figure<F>_<convention>.csv, overwritten on rerun
        reports/   <type>_<timestamp>.json
"""

from datetime import datetime
from pathlib import Path
from typing import Optional, Union

DEFAULT_OUTPUT_DIR = "privcode_output"
FIGURE_DIR = "figures"
REPORT_DIR = "reports"


class OutputManager:
    """
    Resolves output paths below a base directory.

    Subdirectories are created when a path inside them is requested.

    Args:
        base_dir: Root of all outputs; relative paths resolve against the
            working directory at the time a path is requested.
    """

    def __init__(self, base_dir: Optional[Union[str, Path]] = None):
        self.base_dir = Path(base_dir or DEFAULT_OUTPUT_DIR)
        self.figure_dir = self.base_dir / FIGURE_DIR
        self.report_dir = self.base_dir / REPORT_DIR

    @staticmethod
    def _inside(directory: Path, name: str) -> Path:
        directory.mkdir(parents=True, exist_ok=True)
        return directory / name

    def get_figure_path(self, figure: int, convention: str) -> Path:
        """CSV path for a reproduced figure; reruns overwrite the same file."""
        return self._inside(self.figure_dir, f"figure{figure}_{convention}.csv")

    def get_report_path(self, filename: Optional[str] = None, report_type: str = "timing") -> Path:
        """
        JSON path for a report.

        Args:
            filename: Exact file name; a "<report_type>_<timestamp>.json" name is
                generated when omitted.
        """
        if not filename:
            filename = f"{report_type}_{datetime.now():%Y%m%d_%H%M%S}.json"
        return self._inside(self.report_dir, filename)


default_output_manager = OutputManager()
