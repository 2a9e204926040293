import sys

from spectra_select.cli.main import main


if __name__ == "__main__":
    # planted-defect demo run: python scripts/run_pipeline.py [--method fi] [--out runs]
    sys.exit(main(["pipeline", "--config", "configs/planted.json", *sys.argv[1:]]))
