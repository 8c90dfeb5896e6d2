#!/usr/bin/env python3
import sys

from qudit_memory.cli import main

if __name__ == "__main__":
    sys.exit(main())
