"""Shared configuration loading, schemas, errors and logging."""
