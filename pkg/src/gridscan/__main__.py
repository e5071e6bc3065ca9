import sys

from gridscan.cli import main

sys.exit(main())
