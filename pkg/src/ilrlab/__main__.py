import sys

from ilrlab.cli import main

sys.exit(main())
