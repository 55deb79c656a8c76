"""Wave-Klein-Gordon laboratory on hyperboloidal foliations."""

__version__ = "0.1.0"
