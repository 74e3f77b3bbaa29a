"""
Formatting - deterministic number output for stdout and files
"""

import config


def format_number(value, digits=None):
    """
    Significant-digit formatting; magnitudes below SCIENTIFIC_BELOW use
    scientific notation

    Args:
        value: real number
        digits: significant digits (default SIGNIFICANT_DIGITS)

    Returns:
        str
    """
    digits = digits or config.SIGNIFICANT_DIGITS
    value = float(value)
    if value == 0.0:
        return "0"
    if abs(value) < config.SCIENTIFIC_BELOW:
        return f"{value:.{digits - 1}e}"
    # 'g' only switches to exponents for huge values here
    return f"{value:.{digits}g}"


def format_measure(G, digits=None):
    """One 'p theta_1 ... theta_q' line per atom at full precision"""
    digits = digits or config.FILE_DIGITS
    lines = []
    for weight, atom in zip(G.weights, G.atoms):
        fields = [f"{weight:.{digits}g}"] + [f"{a:.{digits}g}" for a in atom]
        lines.append(' '.join(fields))
    return '\n'.join(lines) + '\n'
