import sys

from ntw.cli import main

sys.exit(main())
