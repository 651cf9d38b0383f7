# mfgc - distributed equilibria and mean field games of controls
__version__ = "0.1.0"
