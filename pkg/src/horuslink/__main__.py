import sys

from .sim_harness import main

sys.exit(main())
