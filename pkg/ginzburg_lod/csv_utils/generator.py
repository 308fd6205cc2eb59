"""
CSV Generator Module

This module provides functionality to write experiment rows (errors, decay
tails, spectra, fitted rates, sampled fields) to CSV files.
"""
import csv
import logging
import math
import os
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    """
    Render a cell: floats in scientific notation with 16 significant digits,
    booleans and integers as-is, None as an empty string.
    """
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.15e}"
    return str(value)


def generate_csv(
    rows: List[Dict[str, Any]],
    output_file: str,
    fieldnames: Optional[Sequence[str]] = None,
    config_hash: Optional[str] = None,
) -> str:
    """
    Generate a CSV file from a list of row dictionaries.

    Args:
        rows (List[Dict[str, Any]]): Rows in output order
        output_file (str): Path to the output CSV file
        fieldnames (Sequence[str], optional): Column order; union of row keys in first-seen order otherwise
        config_hash (str, optional): Written as a leading "# config_sha256=<hex>" comment line

    Returns:
        str: Path to the generated CSV file

    Raises:
        ValueError: If rows is empty
        IOError: If there's an error writing to the output file
    """
    if not rows:
        logger.error(f"No rows to write to {output_file}")
        raise ValueError("No rows to write to CSV")

    if fieldnames is None:
        fieldnames = []
        for row in rows:
            for key in row:
                if key not in fieldnames:
                    fieldnames.append(key)

    try:
        directory = os.path.dirname(output_file)
        if directory:
            os.makedirs(directory, exist_ok=True)

        with open(output_file, "w", newline="", encoding="utf-8") as f:
            if config_hash is not None:
                f.write(f"# config_sha256={config_hash}\n")
            writer = csv.DictWriter(f, fieldnames=list(fieldnames), extrasaction="ignore")
            writer.writeheader()
            writer.writerows({key: format_value(row.get(key)) for key in fieldnames} for row in rows)

        logger.info(f"CSV generated with {len(rows)} rows: {output_file}")
        return output_file

    except Exception as e:
        logger.error(f"Error generating CSV {output_file}: {str(e)}")
        raise


def read_csv(path: str) -> List[Dict[str, str]]:
    """Read a CSV written by generate_csv, skipping comment lines."""
    with open(path, "r", newline="", encoding="utf-8") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))
