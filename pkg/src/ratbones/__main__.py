import sys

from ratbones.cli import main

sys.exit(main())
