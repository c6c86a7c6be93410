"""Published per-class confusion counts and the metrics printed alongside them."""

# (tp, tn, fp, fn) -> accuracy, precision, recall, specificity, sensitivity, f1, ppv, npv
REFERENCE_ROWS = {
    "bead10": ((322, 1614, 2, 6), (0.9959, 0.9938, 0.9817, 0.9988, 0.9817, 0.9877, 0.9938, 0.9963)),
    "bead20": ((324, 1611, 0, 9), (0.9954, 1.0000, 0.9730, 1.0000, 0.9730, 0.9863, 1.0000, 0.9944)),
    "mcf7": ((184, 1571, 140, 49), (0.9028, 0.5679, 0.7897, 0.9182, 0.7897, 0.6607, 0.5679, 0.9698)),
    "hepg2": ((276, 1494, 48, 126), (0.9105, 0.8519, 0.6866, 0.9689, 0.6866, 0.7603, 0.8519, 0.9222)),
    "rbc": ((324, 1620, 0, 0), (1.0,) * 8),
    "wbc": ((324, 1620, 0, 0), (1.0,) * 8),
}
