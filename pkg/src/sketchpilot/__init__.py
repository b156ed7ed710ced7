"""Turns plain-language instructions plus a hardware manifest into compiled,
uploaded Arduino-dialect sketches, with an automatic compile-error repair
loop and in-place tuning of generated constants."""

__version__ = "0.1.0"
