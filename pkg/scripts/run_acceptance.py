"""Run acceptance criteria 1-10 and print the PASS/FAIL lines.

Usage: python3 scripts/run_acceptance.py [-k EXPR]   (about half an hour on one core)
"""

import sys

import pytest

if __name__ == "__main__":
    sys.exit(pytest.main(["-q", "-s", "tests/test_acceptance.py", *sys.argv[1:]]))
