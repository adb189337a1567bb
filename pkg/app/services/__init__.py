"""Servicios de cálculo: series, estadísticos de inversión temporal, simuladores y trabajos."""
