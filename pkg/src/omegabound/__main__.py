from omegabound.cli import main
import sys

sys.exit(main())
