"""Run the full acceptance suite and print one PASS/FAIL line per criterion."""

from __future__ import annotations

import sys

import pytest

if __name__ == "__main__":
    sys.exit(pytest.main(["-q", "-p", "no:cacheprovider", "tests/test_acceptance.py",
                          *sys.argv[1:]]))
