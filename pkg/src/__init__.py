# cpks - chemotaxis channel simulator and inequality lab
__version__ = "0.1.0"
