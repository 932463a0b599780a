"""
Output formatters for experiment reports.

A report is a dictionary with the keys ``experiment``, ``config_hash``,
``tables`` (name -> DataFrame), ``summary`` (name -> scalar) and ``plot``
(a description of the figure drawn from one of the tables). Formatters turn
reports into CSV tables, gnuplot scripts or console text.
"""

import io
from typing import Any, Dict, Optional

import numpy as np


class BaseFormatter:
    """
    Base class for report formatters.

    Subclasses implement ``format`` to turn a report, or one of its tables,
    into text.
    """

    def format(self, report: Dict[str, Any], table: Optional[str] = None) -> str:
        """Format a report.

        Args:
            report: Experiment report dictionary
            table: Name of the table to format, for table-based formats

        Returns:
            Formatted text

        Raises:
            NotImplementedError: If called on the base class
        """
        raise NotImplementedError("Subclasses must implement format method")


class CsvFormatter(BaseFormatter):
    """
    Format one report table as CSV.

    The first line is a comment carrying the configuration hash, the second
    the column header.

    Example output:
        # config_hash=3f2a...
        M,worst_l2,worst_h1
        0,0.0123,0.0871
    """

    def format(self, report: Dict[str, Any], table: Optional[str] = None) -> str:
        tables = report["tables"]
        if table is None:
            if len(tables) != 1:
                raise ValueError(f"Report has tables {sorted(tables)}; pick one")
            table = next(iter(tables))
        if table not in tables:
            raise ValueError(f"Unknown table: {table}. Tables: {sorted(tables)}")
        buffer = io.StringIO()
        buffer.write(f"# config_hash={report['config_hash']}\n")
        tables[table].to_csv(buffer, index=False, lineterminator="\n")
        return buffer.getvalue()


class GnuplotFormatter(BaseFormatter):
    """Format the report's plot description as a gnuplot script."""

    def format(self, report: Dict[str, Any], table: Optional[str] = None) -> str:
        plot = report["plot"]
        data_file = f"{plot['table']}.csv"
        lines = [
            f"# {report['experiment']} config_hash={report['config_hash']}",
            'set datafile separator ","',
            'set datafile commentschars "#"',
            f'set title "{plot["title"]}"',
            f'set xlabel "{plot["x"]}"',
            f'set ylabel "{plot.get("ylabel", "")}"',
            "set grid",
        ]
        if plot.get("logscale", False):
            lines.append("set logscale y")
            lines.append("set format y '%.0e'")
        curves = [
            f'"{data_file}" using "{plot["x"]}":"{column}" '
            f'with linespoints title "{column}"'
            for column in plot["columns"]
        ]
        lines.append("plot " + ", \\\n     ".join(curves))
        return "\n".join(lines) + "\n"


class TextFormatter(BaseFormatter):
    """
    Format the report summary as human-readable text.

    Example output:
        ================================================================================
        GEIM-LAB EXPERIMENT: decay
        ================================================================================
    """

    def format(self, report: Dict[str, Any], table: Optional[str] = None) -> str:
        lines = []
        lines.append("=" * 80)
        lines.append(f"GEIM-LAB EXPERIMENT: {report['experiment']}")
        lines.append("=" * 80)
        lines.append("")
        lines.append(f"Config hash: {report['config_hash']}")
        lines.append("")

        lines.append("SUMMARY:")
        for key, value in report.get("summary", {}).items():
            lines.append(f"  {key}: {_scalar(value)}")
        lines.append("")

        lines.append("TABLES:")
        for name, frame in report.get("tables", {}).items():
            columns = ", ".join(frame.columns)
            lines.append(f"  - {name}.csv ({len(frame)} rows: {columns})")
        lines.append("")
        return "\n".join(lines)


def _scalar(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "yes" if value else "no"
    if isinstance(value, (float, np.floating)):
        return f"{value:.6g}"
    return str(value)


def get_formatter(format_type: str) -> BaseFormatter:
    """Get a formatter instance for the specified format.

    Args:
        format_type: Type of formatter ('csv', 'gnuplot', 'text')

    Returns:
        Formatter instance

    Raises:
        ValueError: If format_type is not supported
    """
    formatters = {
        "csv": CsvFormatter,
        "gnuplot": GnuplotFormatter,
        "text": TextFormatter,
    }

    if format_type not in formatters:
        raise ValueError(
            f"Unsupported format: {format_type}. "
            f"Supported formats: {list(formatters.keys())}"
        )

    return formatters[format_type]()
