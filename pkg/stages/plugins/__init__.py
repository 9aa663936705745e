"""
Pipeline stages for panelspectra, one module per stage
"""
