import sys

from e2etrust.cli import main

sys.exit(main())
