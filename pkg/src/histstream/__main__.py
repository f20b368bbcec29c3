import sys

from histstream.cli import main

sys.exit(main())
