import sys

from meshalloc.cli import main

sys.exit(main())
