#!/usr/bin/env python3
"""
Ginzburg-Landau LOD CLI

This script serves as the command-line entry point for the Ginzburg-Landau LOD application.
"""
from ginzburg_lod.main import main

if __name__ == "__main__":
    exit(main())
