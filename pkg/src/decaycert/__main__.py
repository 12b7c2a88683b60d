import sys

from decaycert.cli import main

sys.exit(main())
