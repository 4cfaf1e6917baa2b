"""Test suite for gdd-insight"""
