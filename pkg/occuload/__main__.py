import sys
from occuload.main import main

sys.exit(main())
