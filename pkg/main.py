#!/usr/bin/env python3
"""
tacfit: TAC/BrAC diffusion-parameter estimation

Entry point for the CLI application.
"""

from tacfit.cli import main

if __name__ == "__main__":
    main()
