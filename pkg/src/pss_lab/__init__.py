"""
Pseudospherical Lab - symbolic-numeric laboratory for the generalized
Camassa-Holm equation as an equation describing pseudospherical surfaces
"""

__version__ = "0.1.0"
__author__ = "chogerlate"

def main():
    """Main entry point for the application"""
    import sys
    from pss_lab.cli.main import main as run

    sys.exit(run(sys.argv[1:]))
