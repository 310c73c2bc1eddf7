import sys

from voxgrad.cli import main

sys.exit(main())
