"""Tests for epivo"""
