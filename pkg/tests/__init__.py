"""Test suite for MSGC."""
