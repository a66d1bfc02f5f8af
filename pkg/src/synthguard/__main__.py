import sys

from synthguard.pipeline.cli import main

sys.exit(main())
