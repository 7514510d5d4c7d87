"""Алгоритмы: геометрия, DSP, сцены, метки, бимформинг, метрики"""
