"""CSV exporter module for operation records, CDFs and aggregates."""
import csv
import json
import sys
from pathlib import Path
from typing import Iterable, List, Sequence

from rich.console import Console

from errors import ExportError
from metrics import Cdf, ExperimentAggregate, RecordRow

console = Console(legacy_windows=(sys.platform == "win32"))

RECORD_COLUMNS = [
    "experiment_id",
    "set_id",
    "op_id",
    "op_type",
    "key_hex",
    "origin_hex",
    "hops",
    "contacted",
    "failed_fast",
    "failed_slow",
    "start_ms",
    "end_ms",
    "duration_ms",
    "success",
    "replicas",
]

CDF_COLUMNS = ["metric_name", "value", "cumulative_fraction"]


def format_us_as_ms(value_us: int) -> str:
    """
    Render integer microseconds as milliseconds with three decimals.

    Examples:
        1500 -> "1.500"
        -250 -> "-0.250"
    """
    sign = "-" if value_us < 0 else ""
    value_us = abs(value_us)
    return f"{sign}{value_us // 1000}.{value_us % 1000:03d}"


def parse_ms_as_us(text: str) -> int:
    """Inverse of format_us_as_ms; exact, no float rounding."""
    negative = text.startswith("-")
    whole, _, frac = text.lstrip("-").partition(".")
    value = int(whole) * 1000 + int((frac + "000")[:3])
    return -value if negative else value


def _row_fields(row: RecordRow) -> List[str]:
    return [
        row.experiment_id,
        str(row.set_id),
        str(row.op_id),
        row.op_type,
        row.key_hex,
        row.origin_hex,
        str(row.hops),
        str(row.contacted),
        str(row.failed_fast),
        str(row.failed_slow),
        format_us_as_ms(row.start_us),
        format_us_as_ms(row.end_us),
        format_us_as_ms(row.duration_us),
        "true" if row.success else "false",
        "" if row.replicas is None else str(row.replicas),
    ]


def export_records(records: Iterable, path: Path) -> Path:
    """
    Write operation records as CSV, ordered by op id.

    Args:
        records: OpRecord objects (anything with to_row()) or RecordRows
        path: Output CSV file

    Returns:
        The path written

    Raises:
        ExportError: if the file cannot be written
    """
    rows = [r if isinstance(r, RecordRow) else r.to_row() for r in records]
    rows.sort(key=lambda row: row.op_id)
    output_path = Path(path)
    try:
        with open(output_path, "w", newline="", encoding="utf-8") as csvfile:
            writer = csv.writer(csvfile, lineterminator="\n")
            writer.writerow(RECORD_COLUMNS)
            for row in rows:
                writer.writerow(_row_fields(row))
    except OSError as e:
        raise ExportError(output_path, e) from e
    return output_path


def parse_records(path: Path) -> List[RecordRow]:
    """
    Read a records CSV written by export_records.

    Raises:
        ExportError: if the file cannot be read, its header is not the expected one
            or a row is malformed
    """
    input_path = Path(path)
    try:
        with open(input_path, newline="", encoding="utf-8") as csvfile:
            reader = csv.reader(csvfile)
            header = next(reader, None)
            if header != RECORD_COLUMNS:
                raise ExportError(input_path, ValueError(f"unexpected header {header}"))
            rows = []
            for fields in reader:
                values = dict(zip(RECORD_COLUMNS, fields))
                rows.append(RecordRow(
                    experiment_id=values["experiment_id"],
                    set_id=int(values["set_id"]),
                    op_id=int(values["op_id"]),
                    op_type=values["op_type"],
                    key_hex=values["key_hex"],
                    origin_hex=values["origin_hex"],
                    hops=int(values["hops"]),
                    contacted=int(values["contacted"]),
                    failed_fast=int(values["failed_fast"]),
                    failed_slow=int(values["failed_slow"]),
                    start_us=parse_ms_as_us(values["start_ms"]),
                    end_us=parse_ms_as_us(values["end_ms"]),
                    success=values["success"] == "true",
                    replicas=int(values["replicas"]) if values["replicas"] else None,
                ))
            return rows
    except ExportError:
        raise
    except (OSError, ValueError, KeyError) as e:
        raise ExportError(input_path, e) from e


def _format_cdf_value(value, unit: str) -> str:
    if unit == "us":
        return format_us_as_ms(int(value))
    return str(value)


def export_cdf(dist: Cdf, path: Path) -> Path:
    """
    Write a CDF as (metric_name, value, cumulative_fraction) rows, value ascending.

    Microsecond-valued CDFs (unit "us") are rendered in milliseconds.

    Raises:
        ExportError: if the file cannot be written
    """
    output_path = Path(path)
    try:
        with open(output_path, "w", newline="", encoding="utf-8") as csvfile:
            writer = csv.writer(csvfile, lineterminator="\n")
            writer.writerow(CDF_COLUMNS)
            for value, fraction in dist.points():
                writer.writerow([dist.metric_name, _format_cdf_value(value, dist.unit), f"{fraction:.6f}"])
    except OSError as e:
        raise ExportError(output_path, e) from e
    return output_path


def export_aggregate(aggregates: Sequence[ExperimentAggregate], path: Path) -> Path:
    """
    Write aggregates as a JSON array, one object per experiment, keys in fixed order.

    Raises:
        ExportError: if the file cannot be written
    """
    output_path = Path(path)
    payload = [aggregate.to_dict() for aggregate in aggregates]
    try:
        with open(output_path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")
    except OSError as e:
        raise ExportError(output_path, e) from e
    return output_path


def load_aggregate(path: Path) -> list:
    input_path = Path(path)
    try:
        with open(input_path, encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ExportError(input_path, e) from e


def write_outputs(out_dir: Path, records: Sequence, cdfs: Sequence[Cdf],
                  aggregate: ExperimentAggregate, quiet: bool = False) -> List[Path]:
    """Write records.csv, one cdf_<metric>.csv per CDF and aggregate.json into out_dir."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ExportError(out_dir, e) from e

    written = [export_records(records, out_dir / "records.csv")]
    for dist in cdfs:
        written.append(export_cdf(dist, out_dir / f"cdf_{dist.metric_name}.csv"))
    written.append(export_aggregate([aggregate], out_dir / "aggregate.json"))

    if not quiet:
        console.print(f"[green]Wrote {len(records):,} records and {len(cdfs)} CDF(s) to {out_dir}[/green]")
    return written
