"""
JSON Loader Module

This module provides functionality to load experiment configuration documents.
"""
import json
import logging
import os
from typing import Any, Dict

logger = logging.getLogger(__name__)


def load_json_config(file_path: str) -> Dict[str, Any]:
    """
    Load a flat JSON configuration document.

    Args:
        file_path (str): Path to the JSON file

    Returns:
        Dict[str, Any]: The configuration mapping

    Raises:
        FileNotFoundError: If file_path doesn't exist
        json.JSONDecodeError: If the file is invalid JSON
        ValueError: If the document is not a JSON object
    """
    try:
        if not os.path.exists(file_path):
            raise FileNotFoundError(f"Config file not found: {file_path}")

        logger.info(f"Loading JSON config: {file_path}")
        try:
            with open(file_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            logger.error(f"Error parsing JSON file {file_path}: {str(e)}")
            raise

        if not isinstance(data, dict):
            raise ValueError(f"Config {file_path} must be a JSON object, got {type(data).__name__}")

        logger.debug(f"Loaded {len(data)} config keys from {file_path}")
        return data

    except Exception as e:
        logger.error(f"Error loading JSON config: {str(e)}")
        raise
