"""Feature packages: one per domain module"""
