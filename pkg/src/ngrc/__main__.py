import sys

from ngrc.harness.cli import main

sys.exit(main())
