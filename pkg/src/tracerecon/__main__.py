import sys

from tracerecon.cli import main

sys.exit(main())
