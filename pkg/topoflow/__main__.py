import sys

from topoflow.cli import main

sys.exit(main())
