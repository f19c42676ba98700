import sys

from rparvi.cli import main

sys.exit(main())
