"""File I/O Package"""
