"""Núcleo numérico do laboratório: geometria, órbitas, forma normal, séries e recuperação."""
