import os

from django.contrib.auth import get_user_model
from django.core.management.base import BaseCommand, CommandError


class Command(BaseCommand):
    help = 'Creates the superuser named by the DJANGO_SUPERUSER_* environment variables'

    def handle(self, *args, **options):
        username = os.getenv('DJANGO_SUPERUSER_USERNAME')
        email = os.getenv('DJANGO_SUPERUSER_EMAIL')
        password = os.getenv('DJANGO_SUPERUSER_PASSWORD')
        if not username or not password:
            raise CommandError("DJANGO_SUPERUSER_USERNAME and DJANGO_SUPERUSER_PASSWORD must be set")

        try:
            UserModel = get_user_model()
            if UserModel.objects.filter(username=username).exists():
                self.stdout.write(self.style.WARNING("That user already exists."))
                return
            UserModel.objects.create_superuser(username=username, email=email, password=password)
            self.stdout.write(self.style.SUCCESS('Super User created.'))
        except Exception as e:
            self.stdout.write(self.style.ERROR(str(e)))
            raise CommandError("Error creating super user")
