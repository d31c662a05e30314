"""Syntax objects: schemas, queries, databases, ontologies, mappings and verdicts"""
