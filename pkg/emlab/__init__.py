"""emlab — numerical laboratory for elliptic measures of Riesz-product coefficient fields."""

__version__ = "0.1.0"
