from __future__ import annotations

import sys

from cpustat.cli import main

sys.exit(main())
