from ratebandit.cli import main
import sys

sys.exit(main())
