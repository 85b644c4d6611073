"""Novikov incidence series, model-flow residence bounds and a torus Novikov complex.

Modules
-------
novring    Laurent series over Z, rational functions P/(t^m Q), reconstruction.
transfer   incidence series of an integer endomorphism via det(I - At).
modelflow  residence times of the standard flow (x, -y) and its rescaling.
stability  separation, crossing and exit checks for nearby vector fields.
torusnov   flow-line counting for a circle-valued Morse function on the torus.
cli        the ``novikov`` command.
"""

__version__ = "0.1.0"
