import sys

from rbaccess.cli import main

sys.exit(main())
