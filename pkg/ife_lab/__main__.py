import sys

from ife_lab.cli import main

sys.exit(main())
