import sys

from scrsgg.bench.cli import main

sys.exit(main())
