import sys

from tilechol.cli import main

sys.exit(main())
