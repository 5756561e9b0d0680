"""Preconditioned solvers and benchmarks for the multiple-network porosity equations."""
