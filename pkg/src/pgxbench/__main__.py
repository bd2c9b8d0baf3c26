import sys

from pgxbench.cli import main

sys.exit(main())
