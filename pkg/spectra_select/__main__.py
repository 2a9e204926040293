import sys

from spectra_select.cli.main import main

sys.exit(main())
