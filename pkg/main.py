#!/usr/bin/env python3
"""
cpks - chemotaxis channel simulator near Couette flow

Thin entry point; the commands live in src/cli.py.
"""
from src.cli import main

if __name__ == "__main__":
    main()
